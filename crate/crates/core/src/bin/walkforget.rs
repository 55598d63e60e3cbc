fn main() {
    let code = walkforget::cli::dispatch(std::env::args_os());
    std::process::exit(code);
}
