fn main() {
    std::process::exit(gfl_emt::cli_io::cli_main(std::env::args_os()));
}
