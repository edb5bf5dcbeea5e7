//! Kill the server process mid-run and restart it on the same journal directory.

use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Child, Command, Stdio};

use evofarm_core::protocol::{
    decode_reply, encode_submission, CreateReply, FitnessResult, LoopReply, Packet, ReplyStatus, ResultSubmission,
    StatusReport,
};
use evofarm_core::AlgorithmConfig;

struct Server {
    child: Child,
    url: String,
}

fn start(journal: &Path) -> Server {
    let mut child = Command::new(env!("CARGO_BIN_EXE_evofarm-server"))
        .args(["--listen", "127.0.0.1:0", "--journal-dir"])
        .arg(journal)
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .expect("server binary starts");
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let url = line.trim().strip_prefix("listening on ").expect("banner").to_string();
    Server { child, url }
}

fn evaluate(p: &Packet) -> ResultSubmission {
    ResultSubmission {
        packet_id: p.packet_id.clone(),
        results: p
            .individuals
            .iter()
            .map(|e| FitnessResult {
                id: e.id.parse().unwrap(),
                fitness: p.problem.evaluate(&e.chromosome).unwrap(),
            })
            .collect(),
    }
}

async fn status(http: &reqwest::Client, url: &str, id: &str) -> StatusReport {
    http.get(format!("{url}/algorithm/{id}/status")).send().await.unwrap().json().await.unwrap()
}

#[tokio::test]
async fn journal_replay_after_kill() {
    let dir = tempfile::tempdir().unwrap();
    let http = reqwest::Client::new();
    let mut server = start(dir.path());

    let mut config = AlgorithmConfig::griewank_benchmark(64);
    config.algorithm_id = Some("durable".into());
    config.seed = Some(99);
    let created: CreateReply = http
        .post(format!("{}/algorithm", server.url))
        .json(&config)
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    let id = created.algorithm_id;

    let bytes = http.get(format!("{}/algorithm/{id}/packet", server.url)).send().await.unwrap().bytes().await.unwrap();
    let mut reply: LoopReply = decode_reply(&bytes).unwrap();
    for _ in 0..23 {
        let packet = reply.next_packet.unwrap();
        let bytes = http
            .post(format!("{}/algorithm/{id}/results", server.url))
            .body(encode_submission(&evaluate(&packet)).unwrap())
            .send()
            .await
            .unwrap()
            .bytes()
            .await
            .unwrap();
        reply = decode_reply(&bytes).unwrap();
    }
    let before = status(&http, &server.url, &id).await;
    assert_eq!(before.stats.evaluated_count, 23 * 64);

    server.child.kill().unwrap();
    server.child.wait().unwrap();

    let mut server = start(dir.path());
    let after = status(&http, &server.url, &id).await;
    assert_eq!(after.stats.evaluated_count, before.stats.evaluated_count);
    assert_eq!(after.stats.best_fitness, before.stats.best_fitness);
    assert_eq!(after.stats.per_client, before.stats.per_client);
    assert_eq!(after.config, before.config);
    assert_eq!(after.best_trace, before.best_trace);
    let c = after.population;
    assert_eq!(c.evaluated, before.stats.evaluated_count);
    assert_eq!(c.fresh + c.leased + c.evaluated, c.total_created);

    // the recovered run continues to completion
    let bytes = http.get(format!("{}/algorithm/{id}/packet", server.url)).send().await.unwrap().bytes().await.unwrap();
    let mut reply: LoopReply = decode_reply(&bytes).unwrap();
    while reply.status == ReplyStatus::Continue {
        let packet = reply.next_packet.unwrap();
        let bytes = http
            .post(format!("{}/algorithm/{id}/results", server.url))
            .body(encode_submission(&evaluate(&packet)).unwrap())
            .send()
            .await
            .unwrap()
            .bytes()
            .await
            .unwrap();
        reply = decode_reply(&bytes).unwrap();
    }
    let done = status(&http, &server.url, &id).await;
    assert!(done.stats.evaluated_count >= 5000 && done.stats.evaluated_count < 5064);
    assert!(done.stats.best_fitness.unwrap() <= before.stats.best_fitness.unwrap());
    server.child.kill().unwrap();
    server.child.wait().unwrap();
}
