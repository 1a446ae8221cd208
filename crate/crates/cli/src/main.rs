fn main() {
    std::process::exit(xtal_cli::run(std::env::args_os()));
}
