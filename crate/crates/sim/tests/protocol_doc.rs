use waveshot_core::telemetry::{decode, encode, Payload, PROTO_VERSION};

const DOC: &str = include_str!("../../../docs/protocol.md");

fn golden_lines() -> Vec<&'static str> {
    let start = DOC.find("```golden\n").expect("golden block") + "```golden\n".len();
    let end = start + DOC[start..].find("```").expect("closing fence");
    DOC[start..end].lines().collect()
}

#[test]
fn documented_lines_reencode_identically() {
    let lines = golden_lines();
    assert_eq!(lines.len(), 10);
    for line in lines {
        let msg = decode(line.as_bytes()).unwrap_or_else(|e| panic!("{line}: {e}"));
        assert_eq!(encode(&msg).unwrap(), format!("{line}\n"));
    }
}

#[test]
fn documented_heartbeat_versions() {
    let lines = golden_lines();
    match decode(lines[0].as_bytes()).unwrap().payload {
        Payload::Heartbeat { proto_version, .. } => assert_eq!(proto_version, PROTO_VERSION),
        other => panic!("{other:?}"),
    }
    match decode(lines[1].as_bytes()).unwrap().payload {
        Payload::Heartbeat { proto_version, .. } => assert_eq!(proto_version, 2),
        other => panic!("{other:?}"),
    }
}

#[test]
fn every_message_type_is_documented() {
    for tag in [
        "heartbeat",
        "command_manual",
        "set_mode",
        "mission_upload",
        "target_report",
        "state_report",
        "mission_ack",
        "authority",
    ] {
        assert!(
            golden_lines().iter().any(|l| l.contains(&format!("\"type\":\"{tag}\""))),
            "{tag}"
        );
    }
}
