fn main() {
    std::process::exit(teachgym::cli::run(std::env::args_os()));
}
