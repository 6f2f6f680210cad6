fn main() {
    std::process::exit(dmc_cli::cli_main(std::env::args_os()));
}
