//! Naive slot-by-slot shuffle simulation, kept deliberately literal: a
//! 1-based slot array and an explicit walk, sharing no code with the
//! production assembly path.

use trident_core::{Direction, QuasiMatrix};

pub fn assemble(m: &QuasiMatrix) -> String {
    let mut slots = [None::<char>; 21]; // 1-based; index 0 unused

    for (i, row) in m.rows.iter().enumerate() {
        let (start, step): (i32, i32) = if i == 0 {
            (1, 1)
        } else {
            let label = row.label.expect("labeled row");
            let step = match label.direction {
                Direction::Forward => 1,
                Direction::Reverse => -1,
            };
            (i32::from(label.offset), step)
        };

        let wrap = |p: i32| -> i32 {
            let mut q = p;
            while q < 1 {
                q += 20;
            }
            while q > 20 {
                q -= 20;
            }
            q
        };

        let mut pos = start;
        for c in row.converted.chars() {
            while slots[wrap(pos) as usize].is_some() {
                pos = wrap(pos + step);
            }
            slots[wrap(pos) as usize] = Some(c);
            pos = wrap(pos + step);
        }
    }

    (1..=20).map(|i| slots[i].expect("all slots filled")).collect()
}
