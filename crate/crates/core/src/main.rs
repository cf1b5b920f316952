fn main() {
    std::process::exit(orthoseries::cli::run(std::env::args_os()));
}
