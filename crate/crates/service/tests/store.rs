use std::time::Duration;

use tabqa_core::fixtures;
use tabqa_service::SessionStore;

#[test]
fn expired_sessions_are_evicted() {
    let s = SessionStore::new(Duration::from_millis(30), None);
    let id = s.insert(fixtures::toy_brands()).unwrap().table_id;
    assert!(s.get(&id).is_some());
    std::thread::sleep(Duration::from_millis(50));
    assert!(s.get(&id).is_none());
    s.insert(fixtures::toy_brands()).unwrap();
    std::thread::sleep(Duration::from_millis(50));
    assert_eq!(s.sweep(), 1);
    assert!(s.is_empty());
}

#[test]
fn spilled_sessions_survive_a_restart() {
    let dir = std::env::temp_dir().join(format!("tabqa-spill-{}", std::process::id()));
    let first = SessionStore::new(Duration::from_secs(60), Some(dir.clone()));
    let sess = first.insert(fixtures::cars()).unwrap();
    drop(first);
    let second = SessionStore::new(Duration::from_secs(60), Some(dir.clone()));
    let back = second.get(&sess.table_id).expect("restored from disk");
    assert_eq!(back.engine.table().to_csv(), fixtures::cars().to_csv());
    assert!(second.get("../etc/passwd").is_none());
    let _ = std::fs::remove_dir_all(dir);
}
