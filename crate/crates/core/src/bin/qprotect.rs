fn main() {
    std::process::exit(qprotect::cli::run(std::env::args_os()));
}
