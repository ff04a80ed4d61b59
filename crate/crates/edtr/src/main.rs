fn main() {
    std::process::exit(edtr::cli::run(std::env::args_os()));
}
