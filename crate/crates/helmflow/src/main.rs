fn main() {
    std::process::exit(helmflow::run(std::env::args_os()));
}
