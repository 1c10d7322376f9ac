fn main() {
    std::process::exit(topogen_cli::run(std::env::args_os()));
}
