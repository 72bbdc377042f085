use std::process;

fn main() {
    process::exit(agghash_cli::cli_run(std::env::args_os()));
}
