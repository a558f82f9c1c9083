fn main() {
    std::process::exit(amloc::cli::run(std::env::args_os()));
}
