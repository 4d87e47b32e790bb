fn main() {
    std::process::exit(fockchan::cli::run(std::env::args_os()));
}
