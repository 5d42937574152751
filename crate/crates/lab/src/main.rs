fn main() {
    std::process::exit(wkde_lab::cli::run(std::env::args_os()));
}
