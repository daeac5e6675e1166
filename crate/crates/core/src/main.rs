fn main() {
    std::process::exit(ldcanon::cli::run(std::env::args_os()));
}
