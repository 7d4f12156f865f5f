fn main() {
    std::process::exit(spinmarket_cli::run(std::env::args_os()));
}
