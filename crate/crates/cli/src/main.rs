fn main() {
    std::process::exit(siggame_cli::run(std::env::args_os()));
}
