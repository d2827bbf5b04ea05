use std::net::{Ipv4Addr, SocketAddr};

#[tokio::main]
async fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let (port, dir) = match mixbo_service::env_config() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(2);
        }
    };
    if let Err(e) = mixbo_service::serve(SocketAddr::from((Ipv4Addr::UNSPECIFIED, port)), dir).await {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
