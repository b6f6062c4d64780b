//! Serves the bundled toy model on localhost.
//!
//! cargo run -p ffdnet-server --example serve -- [port]
//!
//! Then, for example:
//!
//! curl -s localhost:8080/api/model
//! curl -s -F image=@photo.png -F 'map={"kind":"uniform","sigma":25}' localhost:8080/api/denoise

use std::net::SocketAddr;

use ffdnet::model::load_model;
use ffdnet_server::{serve, ServiceConfig};

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let port: u16 = std::env::args().nth(1).map(|p| p.parse()).transpose()?.unwrap_or(8080);
    let params = load_model(concat!(env!("CARGO_MANIFEST_DIR"), "/../core/assets/toy_gray.model"))?;
    println!("serving on http://127.0.0.1:{port}");
    serve(SocketAddr::from(([127, 0, 0, 1], port)), params, ServiceConfig::default()).await?;
    Ok(())
}
