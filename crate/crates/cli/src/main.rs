fn main() {
    std::process::exit(fairpost_cli::run(std::env::args_os()).into());
}
