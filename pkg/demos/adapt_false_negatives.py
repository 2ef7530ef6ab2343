"""Patch false negatives by incremental output-bias-free updates.

Each iteration samples fresh states, collects the classifier's false
negatives, and nudges the weights toward classifying them positive.
The loop tracks a fixed test set so the fn improvement and the fp cost
are measured on data the updates never saw.
"""

from reachlearn import (
    adaptation_loop,
    generate_dataset,
    get_model,
    train_network,
)


def main():
    model = get_model("neuron")
    train_ds = generate_dataset(model, 4000, strategy="adaptive", seed=7)
    fixed = generate_dataset(model, 4000, strategy="uniform", seed=1234)
    net, _ = train_network("dnn-s", model, train_ds, seed=42)

    adapted, rep = adaptation_loop(
        net, model, fixed, iterations=6, per_iter_samples=2000, seed=5
    )
    print(f"adaptation rate {rep.learning_rate}")
    print(f"iter  new fn   test fn%   test fp%")
    print(
        f"   0       -   {100 * rep.initial.fn_rate:7.3f}"
        f"   {100 * rep.initial.fp_rate:7.3f}"
    )
    for i, (c, m) in enumerate(zip(rep.fn_counts, rep.per_iteration), start=1):
        print(f"{i:4d} {c:7d}   {100 * m.fn_rate:7.3f}   {100 * m.fp_rate:7.3f}")
    print(
        f"\n{rep.accumulated_fn.shape[0]} collected false negatives,"
        f" {100 * rep.reclassified_fraction:.1f}% now classified positive"
    )


if __name__ == "__main__":
    main()
