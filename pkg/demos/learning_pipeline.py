"""
Learning an ordering from timings
=================================

The bundled corpus has 50 random three-variable problems and a synthetic
timing for each of the six orderings.  The timings come from a toy cost
model, not from a CAD system, so the absolute numbers mean nothing; the
point is to run every stage end to end.
"""

import numpy as np

from cadfeat.dataset import ClassMap, LabelledCorpus, rank_features, simplify, split
from cadfeat.features import enumerate_descriptors, evaluate_matrix
from cadfeat.heuristics import PredictionSet, brown, sotd
from cadfeat.ml import EvaluationReport, TimingTable, assign_targets, baselines, evaluate, knn_train, training_labels
from cadfeat.parse import load_corpus
from cadfeat.synthetic import bundled_paths

corpus_path, timings_path = bundled_paths()
problems = load_corpus(corpus_path)
table = TimingTable.read(timings_path)

targets = assign_targets(table)
cm = ClassMap(("x1", "x2", "x3"))
labels = training_labels(targets, cm)
print("problems with tied fastest orderings:", sum(len(t.targets) > 1 for t in targets.values()))

features = evaluate_matrix(enumerate_descriptors(3), problems)
simple, report = simplify(features)
print(features.shape[1], "features ->", simple.shape[1], "after dropping constants and duplicates")

data = LabelledCorpus(simple, [labels[pid] for pid in simple.problem_ids], cm)
train, test = split(data, 0.7, seed=0)

ranking = rank_features(train)
print("top features by F-value:")
for serial, F in ranking[:5]:
    print(f"  {simple.descriptors[serial].formula():45s} F = {F:.2f}")

keep = [s for s, _ in ranking[:20]]
model = knn_train(LabelledCorpus(train.matrix.select(keep), train.labels, cm), grid=range(1, 16))
print("chosen k:", model.k)

guesses = model.predict(np.asarray(test.matrix.select(keep).to_numpy()))
knn = {pid: PredictionSet([o], method="knn") for pid, o in zip(test.matrix.problem_ids, guesses)}
by_id = {p.id: p for p in problems}
ids = list(knn)
results = [
    evaluate(knn, table, targets),
    evaluate({pid: brown(by_id[pid]) for pid in ids}, table, targets),
    evaluate({pid: sotd(by_id[pid]) for pid in ids}, table, targets),
] + baselines(table, ids)
print(EvaluationReport(results).to_csv())
