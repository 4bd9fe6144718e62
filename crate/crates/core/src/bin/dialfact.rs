fn main() {
    std::process::exit(dialfact::cli::run(std::env::args_os()));
}
