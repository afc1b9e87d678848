fn main() {
    std::process::exit(circtype::cli::run(std::env::args_os()));
}
