fn main() {
    std::process::exit(gradient_lab::cli::run(std::env::args_os()));
}
