use proptest::prelude::*;
use tinyjam_core::perf::{parse_events_csv, serialize_events_csv, validate_events, TouchEvent};

fn micro() -> impl Strategy<Value = f64> {
    (0u32..=1_000_000).prop_map(|v| v as f64 / 1e6)
}

/// Valid event streams with 6-decimal values.
fn stream() -> impl Strategy<Value = Vec<TouchEvent>> {
    prop::collection::vec(
        (0u32..=20_000, micro(), micro(), 0u64..=200_000_000, any::<bool>()),
        0..60,
    )
    .prop_map(|rows| {
        let mut t = 0u64;
        let mut out = Vec::with_capacity(rows.len());
        for (i, (step, x, y, z, moving)) in rows.into_iter().enumerate() {
            t = (t + step as u64).min(5_000_000);
            out.push(TouchEvent::new(
                t as f64 / 1e6,
                x,
                y,
                z as f64 / 1e6,
                moving && i > 0,
            ));
        }
        out
    })
}

proptest! {
    #[test]
    fn serialize_parse_round_trip(events in stream()) {
        prop_assert!(validate_events(&events).is_ok());
        let text = serialize_events_csv(&events);
        prop_assert_eq!(text.lines().count(), events.len() + 1);
        let back = parse_events_csv(&text).unwrap();
        prop_assert_eq!(&back, &events);
        prop_assert_eq!(serialize_events_csv(&back), text);
    }

    #[test]
    fn parsing_arbitrary_bytes_never_panics(bytes in prop::collection::vec(any::<u8>(), 0..400)) {
        let text = String::from_utf8_lossy(&bytes);
        let _ = parse_events_csv(&text);
        let with_header = format!("time,x,y,z,moving\n{text}");
        if let Ok(events) = parse_events_csv(&with_header) {
            let _ = validate_events(&events);
        } else if let Err(e) = parse_events_csv(&with_header) {
            prop_assert!(e.line() >= 2);
        }
    }

    #[test]
    fn validation_never_mutates(mut events in stream(), shift in -2.0f64..2.0) {
        if let Some(e) = events.first_mut() {
            e.x += shift;
        }
        let before = events.clone();
        let _ = validate_events(&events);
        prop_assert_eq!(before, events);
    }
}

#[test]
fn typical_performance_is_about_five_kilobytes() {
    let events: Vec<TouchEvent> = (0..150)
        .map(|i| TouchEvent::new(i as f64 / 30.0, 0.276382, 0.41608, 38.640625, i % 20 != 0))
        .collect();
    let size = serialize_events_csv(&events).len();
    assert!((5_000..=6_500).contains(&size), "{size} bytes");
}
