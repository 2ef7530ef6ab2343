"""Spatial, threshold, and horizon analyses of a trained classifier.

Region analysis maps where in state space errors concentrate; the
threshold sweep trades false negatives against false positives on one
fixed score set; the time-bound sweep retrains per horizon to show how
problem difficulty changes with T.
"""

import numpy as np

from reachlearn import (
    evaluate,
    generate_dataset,
    get_model,
    region_analysis,
    save_region_csv,
    select_threshold_min_fn,
    threshold_sweep,
    timebound_analysis,
    train_network,
)


def main():
    model = get_model("pendulum")
    train_ds = generate_dataset(model, 4000, strategy="adaptive", seed=7)
    test_ds = generate_dataset(model, 4000, strategy="uniform", seed=1234)
    net, _ = train_network("dnn-s", model, train_ds, seed=42)

    # where do the errors live?
    rep = region_analysis(net, model, grid=(6, 6), per_cell=500, seed=0)
    acc = np.array([m.acc for m in rep.cells]).reshape(rep.rows, rep.cols)
    r, c = (int(i) for i in np.unravel_index(np.argmin(acc), acc.shape))
    print(f"region grid 6x6, accuracy {acc.min():.3f}..{acc.max():.3f}")
    print(f"worst cell ({r}, {c}): angle in "
          f"[{rep.row_edges[r]:.2f}, {rep.row_edges[r + 1]:.2f}]")
    save_region_csv(rep, "/tmp/pendulum_regions.csv")

    # push fn down by lowering the threshold, paying a bounded acc loss
    sweep = threshold_sweep(net, test_ds)
    baseline = evaluate(net, test_ds).acc
    theta = select_threshold_min_fn(sweep, 0.005, baseline)
    at = sweep.values.index(theta)
    print(f"\nthreshold {theta:.2f}: fn {100 * sweep.metrics[at].fn_rate:.3f}%"
          f" (default 0.50: fn"
          f" {100 * sweep.metrics[sweep.values.index(0.5)].fn_rate:.3f}%)")

    # smaller horizons are easier: fewer reachable states, crisper boundary
    tb = timebound_analysis(
        model, (1.0, 2.5, 5.0), train_size=2000, test_size=1500, seed=3
    )
    print("\nhorizon  accuracy")
    for T, m in zip(tb.values, tb.metrics):
        print(f"  {T:4.1f}   {100 * m.acc:6.2f}%")


if __name__ == "__main__":
    main()
