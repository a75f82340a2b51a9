use blob_core::attack::PirateBlob;
use blob_core::bits::IndexSet;
use blob_core::error::Error;
use blob_core::scheme::{decrypt, initialise, Aes128Gcm, ControlForm, Mode, SchemeParams};

fn params(mode: Mode) -> SchemeParams {
    // single-use needs room for 1000 keys of 128 one-bit entries
    let n = match mode {
        Mode::SingleUse => 1 << 18,
        Mode::MultiUse => 1 << 16,
    };
    let mut p = SchemeParams::new(1, n, 128, 4096, mode);
    p.users = 8;
    p
}

fn round_trips(mode: Mode, form: ControlForm, rounds: u64) {
    let p = params(mode);
    let (mut state, blobs) = initialise(&p, b"protocol").unwrap();
    state.set_control_form(form);
    for r in 0..rounds {
        let msg = format!("frame {r}");
        let ct = state.encrypt(&Aes128Gcm, msg.as_bytes(), b"rounds").unwrap();
        let blob = &blobs[(r % p.users as u64) as usize];
        let pt = decrypt(&p, blob, &ct, &Aes128Gcm).unwrap();
        assert_eq!(pt, msg.as_bytes(), "round {r}");
    }
    assert_eq!(state.issued(), rounds);
}

#[test]
fn thousand_round_trips_single_use() {
    round_trips(Mode::SingleUse, ControlForm::Explicit, 1000);
}

#[test]
fn thousand_round_trips_multi_use() {
    round_trips(Mode::MultiUse, ControlForm::Explicit, 1000);
}

#[test]
fn seeded_control_round_trips() {
    round_trips(Mode::MultiUse, ControlForm::Seeded, 200);
}

#[test]
fn single_use_entries_are_disjoint() {
    let p = params(Mode::SingleUse);
    let (mut state, _) = initialise(&p, b"disjoint").unwrap();
    let mut seen = IndexSet::new(p.entry_count);
    for _ in 0..500 {
        let msg = state.next_control_message(b"r").unwrap();
        for i in msg.indices(p.entry_count, p.entries_per_key).unwrap() {
            assert!(seen.insert(i), "index {i} reused");
            assert!(!state.tracing_positions().contains(i));
        }
    }
}

#[test]
fn one_erased_addressed_entry_breaks_decryption() {
    for mode in [Mode::SingleUse, Mode::MultiUse] {
        let p = params(mode);
        let (mut state, blobs) = initialise(&p, b"erase").unwrap();
        for r in 0..20u64 {
            let ct = state.encrypt(&Aes128Gcm, b"payload", b"rounds").unwrap();
            let indices = ct.control.indices(p.entry_count, p.entries_per_key).unwrap();
            let victim = indices[(r as usize * 7) % indices.len()];
            let blob = &blobs[0];
            let pirate = PirateBlob::from_parts(
                blob.entries().clone(),
                IndexSet::from_indices(p.entry_count, [victim]),
                Vec::new(),
            )
            .unwrap();
            assert!(matches!(
                decrypt(&p, &pirate, &ct, &Aes128Gcm),
                Err(Error::Erased(i)) if i == victim
            ));
            // erasing an entry the key does not use is harmless
            let spare = (0..p.entry_count).find(|i| !indices.contains(i)).unwrap();
            let pirate = PirateBlob::from_parts(
                blob.entries().clone(),
                IndexSet::from_indices(p.entry_count, [spare]),
                Vec::new(),
            )
            .unwrap();
            assert_eq!(decrypt(&p, &pirate, &ct, &Aes128Gcm).unwrap(), b"payload");
        }
    }
}

#[test]
fn reruns_are_byte_identical() {
    for mode in [Mode::SingleUse, Mode::MultiUse] {
        let p = params(mode);
        let run = || {
            let (mut state, blobs) = initialise(&p, b"fixed root").unwrap();
            let cts: Vec<_> = (0..50)
                .map(|_| state.encrypt(&Aes128Gcm, b"x", b"fixed rounds").unwrap())
                .collect();
            (blobs, cts)
        };
        let (blobs_a, cts_a) = run();
        let (blobs_b, cts_b) = run();
        assert_eq!(cts_a, cts_b);
        for (a, b) in blobs_a.iter().zip(&blobs_b) {
            assert_eq!(a.entries().to_le_bytes(), b.entries().to_le_bytes());
        }
        let (_, other) = initialise(&p, b"other root").unwrap();
        assert_ne!(blobs_a[0].entries().to_le_bytes(), other[0].entries().to_le_bytes());
    }
}

#[test]
fn single_use_exhaustion_is_reported() {
    let mut p = SchemeParams::new(1, 1024, 128, 256, Mode::SingleUse);
    p.users = 2;
    let (mut state, _) = initialise(&p, b"small").unwrap();
    for _ in 0..6 {
        state.encrypt(&Aes128Gcm, b"x", b"r").unwrap();
    }
    assert!(matches!(state.encrypt(&Aes128Gcm, b"x", b"r"), Err(Error::Exhausted(_))));
}
