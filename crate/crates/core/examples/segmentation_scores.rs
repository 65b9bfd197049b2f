//! Scores a shifted prediction against a reference mask: Dice for disc and
//! cup, vertical diameters and the cup-to-disc ratio error.

use fundus_eval::mask::{region_of, OdRule};
use fundus_eval::seg_metrics::{dice, score_image, vcdr, vertical_diameter};
use fundus_eval::synth::{render_mask, EllipseParams};
use fundus_eval::RegionKind;

fn main() -> anyhow::Result<()> {
    let disc = EllipseParams { cx: 64.0, cy: 64.0, semi_h: 36.0, semi_v: 40.0, theta: 0.0 };
    let cup = EllipseParams { cx: 64.0, cy: 62.0, semi_h: 18.0, semi_v: 22.0, theta: 0.0 };
    let truth = render_mask(&disc, &cup, 128, 128);
    let shifted = |e: &EllipseParams, dy: f64, grow: f64| EllipseParams {
        cy: e.cy + dy,
        semi_v: e.semi_v + grow,
        ..*e
    };
    let pred = render_mask(&shifted(&disc, 3.0, 0.0), &shifted(&cup, 2.0, 4.0), 128, 128);

    for kind in [RegionKind::OpticDisc, RegionKind::OpticCup] {
        let (p, t) = (region_of(&pred, kind), region_of(&truth, kind));
        println!(
            "{kind:?}: dice {:.4}, vertical diameter {} (truth {})",
            dice(&p, &t)?,
            vertical_diameter(&p),
            vertical_diameter(&t)
        );
    }
    println!("vCDR pred {:.4}, truth {:.4}", vcdr(&pred).value, vcdr(&truth).value);

    let (score, empty_disc) = score_image("img0001", &pred, &truth, OdRule::default())?;
    println!("{score:?} (empty predicted disc: {empty_disc})");
    Ok(())
}
