"""Run one full experiment twice: honestly, then with poisoning.

Desk-scale setup: 20 clients on a skewed label partition of a blob dataset,
a deep cut (the client holds most of the model), trimmed-mean aggregation of
the client halves. The attack crafts the malicious clients' submitted halves
each round with the gamma found against the deployed rule. Comparing final
accuracies gives the accuracy drop - the single number the sweeps report.
"""
import dataclasses

from splitfedsim.config import ExperimentConfig
from splitfedsim.experiments import accuracy_drop, final_accuracy, last_gamma
from splitfedsim.protocol import train


def show(tag, records):
    marks = {records[0].round_no, 49, 99, 149, records[-1].round_no}
    print(f"  {tag}:")
    for rec in records:
        if rec.round_no in marks:
            gamma = f"  gamma {rec.gamma:.3f}" if rec.gamma is not None else ""
            print(f"    round {rec.round_no:>3}  acc {rec.test_accuracy:.3f}  "
                  f"loss {rec.loss:.3f}{gamma}")


def main():
    attacked = ExperimentConfig(cut="v3", defense="trmean", attack="agropt").validate()
    clean = dataclasses.replace(attacked, attack="none")

    print("splitfed, cut v3, trmean defense, 20% malicious, seed 42")
    print(f"(attack holds off until round {attacked.resolved_attack_start()} "
          "so the model first gets somewhere worth attacking)")
    print()

    clean_records = train(clean)
    show("no attack", clean_records)
    attacked_records = train(attacked)
    show("poisoned", attacked_records)

    acc = final_accuracy(clean_records)
    acc_attack = final_accuracy(attacked_records)
    print()
    print(f"final accuracy (mean over last 10 evals): "
          f"clean {acc:.2f}%, attacked {acc_attack:.2f}%")
    print(f"accuracy drop: {accuracy_drop(acc, acc_attack):.2f} points, "
          f"last crafted gamma {last_gamma(attacked_records):.3f}")


if __name__ == "__main__":
    main()
