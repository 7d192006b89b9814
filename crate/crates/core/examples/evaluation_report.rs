//! Confusion matrix, per-class and macro metrics, and report rendering.
//!
//! ```bash
//! cargo run --example evaluation_report
//! ```

use std::error::Error;

use wolgof::corpus::Tag;
use wolgof::evaluation::{evaluate, format_report, ReportStyle};

pub fn run() -> Result<(), Box<dyn Error>> {
    use Tag::*;
    let gold = [Wal, Wal, Gof, WalGof];
    let pred = [Wal, Gof, Gof, WalGof];
    let report = evaluate("worked example", &gold, &pred)?;
    for tag in Tag::ALL {
        let c = report.class(tag);
        println!("{tag:<8} P {:?} R {:?} F1 {:?} (support {})", c.precision, c.recall, c.f1, c.support);
    }
    println!("macro-F1 {} = 7/9", report.macro_avg.f1);
    for g in Tag::ALL {
        let row: Vec<usize> = Tag::ALL.iter().map(|&p| report.confusion.get(g, p)).collect();
        println!("  gold {g:<8} {row:?}");
    }

    // A class missing from gold and predictions drops out of the mean.
    let two_class = evaluate("two classes", &[Wal, Gof, Gof], &[Wal, Gof, Wal])?;
    println!("\nwal-gof metrics: {:?}", two_class.class(WalGof).f1);

    let rows = [report, two_class];
    print!("\n{}", format_report(&rows, ReportStyle::Text));
    println!("{}", format_report(&rows[..1], ReportStyle::Json));
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run()
}
