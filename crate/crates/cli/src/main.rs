fn main() {
    std::process::exit(attnflow_cli::run(std::env::args_os()));
}
