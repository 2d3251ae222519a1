fn main() {
    std::process::exit(warpcomp::cli::dispatch(std::env::args_os()));
}
