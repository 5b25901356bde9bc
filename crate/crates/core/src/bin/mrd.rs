fn main() {
    std::process::exit(mrd::cli::run(std::env::args_os()));
}
