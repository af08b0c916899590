fn main() {
    std::process::exit(haptica::cli::run(std::env::args_os()));
}
