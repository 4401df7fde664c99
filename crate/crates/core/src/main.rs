use std::process::ExitCode;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let code = iqc_radius::cli::run(std::env::args_os(), |k| std::env::var(k).ok(), &mut std::io::stdout());
    ExitCode::from(code)
}
