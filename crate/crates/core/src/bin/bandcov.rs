fn main() {
    std::process::exit(bandcov::cli::run(std::env::args_os()));
}
