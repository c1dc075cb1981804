use qheat_demo::{eigenmode_plot, forward_plot, source_plot};

#[test]
fn eigenmodes_share_the_lattice() {
    let plot = eigenmode_plot(0.5, 3).unwrap();
    assert_eq!(plot.count(), 3);
    let x = plot.x();
    assert!(x.windows(2).all(|w| w[0] < w[1]));
    assert_eq!(*x.last().unwrap(), 1.0);
    for i in 0..3 {
        assert_eq!(plot.series(i).len(), x.len());
        assert!(plot.series(i).last().unwrap().abs() < 1e-12);
    }
    assert!(plot.label(0).starts_with("k=1"));
    assert!(eigenmode_plot(1.5, 3).is_err());
}

#[test]
fn unforced_mass_decays() {
    let plot = forward_plot(0.5, 0.0).unwrap();
    let mass = plot.series(0);
    assert!(mass.windows(2).all(|w| w[1] < w[0]));
    let driven = forward_plot(0.5, 5.0).unwrap();
    assert!(driven.series(0).last() > mass.last());
}

#[test]
fn clean_recovery_is_accurate() {
    let plot = source_plot(0.5, 0.0, 0).unwrap();
    for (t, (a, b)) in plot
        .x()
        .iter()
        .zip(plot.series(0).iter().zip(plot.series(1)))
    {
        assert!((a - b).abs() <= 1e-6, "t={t}");
    }
    let noisy = source_plot(0.5, 1e-4, 3).unwrap();
    assert_eq!(noisy, source_plot(0.5, 1e-4, 3).unwrap());
    assert_ne!(noisy, plot);
}
