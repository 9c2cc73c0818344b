fn main() {
    std::process::exit(lpselect::cli::run(std::env::args_os()));
}
