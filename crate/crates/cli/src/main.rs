fn main() {
    std::process::exit(ldrr_cli::run_cli(std::env::args_os()));
}
