//! Walks one message through each challenge protocol and prints the wire
//! trace, then replays the P2 token for a second message.
//!
//! ```text
//! cargo run --example protocol_walkthrough
//! ```

use hybridspam::challenge::{CenterConfig, Harness, Outcome, Protocol, StoredSubmission};
use hybridspam::SenderKind;

const RECIPIENT: hybridspam::challenge::PrincipalId = hybridspam::challenge::PrincipalId(200);

fn show(o: &Outcome) -> String {
    match o {
        Outcome::Delivered { payload } => format!("delivered {:?}", String::from_utf8_lossy(payload)),
        other => format!("{other:?}"),
    }
}

fn main() {
    let stored = StoredSubmission {
        recipient: RECIPIENT,
        payload: b"lunch on friday?".to_vec(),
    };

    for protocol in [Protocol::P1, Protocol::P2, Protocol::P3, Protocol::P4] {
        let mut h = Harness::toy(7, CenterConfig::default());
        let human = h.agent(SenderKind::Human);
        let (outcome, creds) = h.exchange(protocol, &human, &stored, true);
        println!("== {protocol}: {}, {} hops", show(&outcome), h.hops);
        for e in &h.events {
            let size = e.wire.as_ref().map_or(0, |w| w.len() / 2);
            println!("  t={:<2} {:<16} {:<8} {:>4} bytes", e.time, format!("{:?}", e.direction), e.msg, size);
        }

        if let Some(creds) = creds {
            let m = human.resubmit(&h.sender_crypto, protocol, &creds, RECIPIENT, b"and saturday");
            let before = h.hops;
            let d = h.respond(protocol, &m);
            println!("  token reuse: {}, {} more hops", show(&Outcome::from_decision(d)), h.hops - before);
        }
    }

    let mut h = Harness::toy(7, CenterConfig::default());
    let bot = h.agent(SenderKind::Bot);
    let (outcome, _) = h.exchange(Protocol::P3, &bot, &stored, false);
    println!("== bot that cannot read the CAPTCHA under P3: {}", show(&outcome));
}
