use std::io::{self, Write};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let stdin = io::stdin();
    let mut input = stdin.lock();
    let code = ibdwb::cli::run(std::env::args_os(), &mut input, &mut io::stdout(), &mut io::stderr());
    let _ = io::stdout().flush();
    std::process::exit(code);
}
