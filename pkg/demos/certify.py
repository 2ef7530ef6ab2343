"""Certify a trained classifier with Wald's sequential test.

The SPRT consumes freshly sampled, freshly labeled states one at a time
and stops as soon as the evidence crosses a decision bound, so the
sample count adapts to how clear-cut the claim is.  Error-rate claims
(fn, fp) are certified through their complements at level 1 - theta.
"""

from reachlearn import (
    SPRTConfig,
    certification_stream,
    generate_dataset,
    get_model,
    sprt_certify,
    train_network,
)


def main():
    model = get_model("neuron")
    train_ds = generate_dataset(model, 4000, strategy="adaptive", seed=7)
    net, _ = train_network("dnn-s", model, train_ds, seed=42)

    claims = (
        ("acc", 0.95, 0.005),   # easy claim, quick accept
        ("fn", 0.02, 0.005),    # fn rate at most 2%
        ("acc", 0.9999, 0.00005),  # too strong, expect violated
    )
    for metric, theta, delta in claims:
        cfg = SPRTConfig(metric=metric, theta=theta, delta=delta)
        stream = certification_stream(net, model, metric, seed=3)
        verdict = sprt_certify(stream, cfg)
        print(
            f"{metric} >= {theta}: {verdict.decision:12s}"
            f" after {verdict.samples_used:6d} fresh samples"
            if metric == "acc"
            else f"{metric} <= {theta}: {verdict.decision:12s}"
            f" after {verdict.samples_used:6d} fresh samples"
        )


if __name__ == "__main__":
    main()
