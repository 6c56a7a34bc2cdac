//! Embeds fragments through the HTTP protocol against a stand-in service
//! that runs in-process. Point `--service-endpoint` at a real service to
//! use a neural encoder instead.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::thread;

use sscd::embedder::{embed_batch, EmbedRequest, EmbedResponse, EmbedderConfig, ProviderKind};
use sscd::extractor::{CodeFragment, ExtractionConfig};

const DIM: usize = 8;

/// Answers each POST /embed with letter-frequency vectors.
fn serve(listener: TcpListener) {
    for stream in listener.incoming() {
        let Ok(mut stream) = stream else { continue };
        let mut reader = BufReader::new(stream.try_clone().unwrap());
        let mut length = 0;
        loop {
            let mut line = String::new();
            if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
                break;
            }
            if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                length = v.trim().parse().unwrap_or(0);
            }
        }
        let mut body = vec![0; length];
        if reader.read_exact(&mut body).is_err() {
            continue;
        }
        let req: EmbedRequest = serde_json::from_slice(&body).unwrap();
        let vectors = req
            .texts
            .iter()
            .map(|t| {
                let mut v = vec![0.0; DIM];
                for b in t.bytes().filter(u8::is_ascii_alphabetic) {
                    v[usize::from(b) % DIM] += 1.0;
                }
                v
            })
            .collect();
        let out = serde_json::to_vec(&EmbedResponse { dimension: DIM, vectors }).unwrap();
        let head = format!(
            "HTTP/1.1 200 OK\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n",
            out.len()
        );
        let _ = stream.write_all(head.as_bytes()).and_then(|_| stream.write_all(&out));
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let listener = TcpListener::bind("127.0.0.1:0")?;
    let endpoint = format!("http://{}", listener.local_addr()?);
    thread::spawn(move || serve(listener));

    let cfg = EmbedderConfig {
        provider: ProviderKind::Remote,
        dimension: DIM,
        model_name: "letters".into(),
        service_endpoint: Some(endpoint.clone()),
        batch_size: 2,
        ..Default::default()
    };
    let ecfg = ExtractionConfig::default();
    let frags: Vec<CodeFragment> = ["int a() { return 1; }", "int b() { return 2; }", "void c(char *s) { puts(s); }"]
        .iter()
        .enumerate()
        .map(|(i, t)| CodeFragment::new(i as u64, "x.c", 1, 1, "f", *t, &ecfg))
        .collect();
    for v in embed_batch(&frags, &cfg)? {
        let shown: Vec<String> = v.values.iter().map(|x| format!("{x:.3}")).collect();
        println!("{} -> [{}]", v.fragment_id, shown.join(", "));
    }
    println!("served by {endpoint}/embed");
    Ok(())
}
