//! Value change dump writer.

use std::fmt::Write;

use crate::domain::Trace;

/// Identifier code for the `n`-th declared variable: `!` .. `~`, then two
/// characters, and so on.
pub fn id_code(mut n: usize) -> String {
    const BASE: usize = 94;
    let mut out = Vec::new();
    loop {
        out.push((b'!' + (n % BASE) as u8) as char);
        n /= BASE;
        if n == 0 {
            break;
        }
        n -= 1;
    }
    out.into_iter().collect()
}

fn value_change(out: &mut String, width: u32, v: u64, id: &str) {
    if width == 1 {
        let _ = writeln!(out, "{v}{id}");
    } else {
        let _ = writeln!(out, "b{v:b} {id}");
    }
}

/// Render a trace, one time unit per cycle. Only changed values are dumped;
/// a closing `#<length>` marks the end of the last cycle.
pub fn emit_vcd(trace: &Trace) -> String {
    let mut out = String::new();
    out.push_str("$timescale 1ns $end\n");
    let _ = writeln!(out, "$scope module {} $end", trace.design);
    let ids: Vec<String> = (0..trace.signals.len()).map(id_code).collect();
    for (s, id) in trace.signals.iter().zip(&ids) {
        let _ = writeln!(out, "$var wire {} {} {} $end", s.width, id, s.name);
    }
    out.push_str("$upscope $end\n$enddefinitions $end\n");
    for t in 0..trace.length {
        let mut block = String::new();
        for (i, s) in trace.signals.iter().enumerate() {
            let v = trace.values[i][t];
            if t == 0 || trace.values[i][t - 1] != v {
                value_change(&mut block, s.width, v, &ids[i]);
            }
        }
        if !block.is_empty() {
            let _ = writeln!(out, "#{t}");
            out.push_str(&block);
        }
    }
    let _ = writeln!(out, "#{}", trace.length);
    out
}
