fn main() {
    std::process::exit(resub_cli::run(std::env::args_os()));
}
