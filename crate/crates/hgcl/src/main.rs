fn main() {
    std::process::exit(hgcl::cli::run(std::env::args_os()));
}
