fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let mut out = std::io::stdout();
    let mut err = std::io::stderr();
    let code = docspec::cli::run(
        std::env::args_os(),
        &mut docspec::cli::Io {
            out: &mut out,
            err: &mut err,
        },
    );
    std::process::exit(code);
}
