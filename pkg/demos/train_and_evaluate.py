"""Train a sigmoid network on pendulum reachability and report metrics.

The evaluation report carries Wilson confidence intervals for accuracy
and both error rates; the false-negative rate is the safety-critical one
(a reachable state classified as unreachable).
"""

from reachlearn import (
    evaluate,
    generate_dataset,
    get_model,
    load_model,
    save_model,
    train_network,
)


def main():
    model = get_model("pendulum")
    train_ds = generate_dataset(model, 4000, strategy="adaptive", seed=7)
    test_ds = generate_dataset(model, 4000, strategy="uniform", seed=1234)

    net, log = train_network("dnn-s", model, train_ds, seed=42)
    print(f"trained {net.layer_sizes} in {len(log.losses) - 1} epochs")
    print(f"final loss {log.losses[-1]:.3e} ({log.stop_reason})")

    report = evaluate(net, test_ds)
    lo, hi = report.ci_acc
    print(f"\naccuracy {100 * report.acc:.2f}%  [{100 * lo:.2f}, {100 * hi:.2f}]")
    lo, hi = report.ci_fn
    print(f"fn rate  {100 * report.fn_rate:.3f}%  [{100 * lo:.3f}, {100 * hi:.3f}]")
    lo, hi = report.ci_fp
    print(f"fp rate  {100 * report.fp_rate:.3f}%  [{100 * lo:.3f}, {100 * hi:.3f}]")

    save_model(net, "/tmp/pendulum_dnn_s.json")
    reloaded = load_model("/tmp/pendulum_dnn_s.json")
    assert evaluate(reloaded, test_ds).acc == report.acc
    print("\nmodel round-trips through /tmp/pendulum_dnn_s.json")


if __name__ == "__main__":
    main()
