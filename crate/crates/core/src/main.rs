use std::process::ExitCode;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or(gawk_curves::cli::LOG_ENV, "warn"))
        .format_timestamp(None)
        .init();
    ExitCode::from(gawk_curves::cli::run(std::env::args_os()))
}
