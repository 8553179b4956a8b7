fn main() {
    std::process::exit(authmine::cli::run(std::env::args_os()));
}
