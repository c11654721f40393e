fn main() {
    std::process::exit(qpat::cli::run(std::env::args_os()));
}
