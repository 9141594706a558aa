fn main() {
    std::process::exit(nfhrtf_cli::dispatch(std::env::args_os()));
}
