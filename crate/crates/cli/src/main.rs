fn main() {
    std::process::exit(ugvq_cli::run(std::env::args_os()));
}
