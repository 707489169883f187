export function accuracy(labels: number[], predicted: number[]): number {
  if (labels.length !== predicted.length || labels.length === 0) {
    throw new Error('accuracy needs matching, non-empty label lists');
  }
  let hits = 0;
  for (let i = 0; i < labels.length; i++) {
    if (labels[i] === predicted[i]) hits++;
  }
  return hits / labels.length;
}

/**
 * Binary ROC AUC from positive-class scores, computed as the rank statistic
 * (Mann-Whitney U with average ranks on ties).
 */
export function binaryAuc(labels: number[], scores: number[]): number {
  if (labels.length !== scores.length || labels.length === 0) {
    throw new Error('auc needs matching, non-empty label/score lists');
  }
  const nPos = labels.filter((l) => l === 1).length;
  const nNeg = labels.length - nPos;
  if (nPos === 0 || nNeg === 0) {
    throw new Error('auc needs both classes present');
  }
  const order = labels.map((_, i) => i).sort((a, b) => scores[a] - scores[b]);
  const ranks = new Array<number>(labels.length);
  let i = 0;
  while (i < order.length) {
    let j = i;
    while (j + 1 < order.length && scores[order[j + 1]] === scores[order[i]]) j++;
    const avgRank = (i + j) / 2 + 1; // ranks are 1-based
    for (let k = i; k <= j; k++) ranks[order[k]] = avgRank;
    i = j + 1;
  }
  let posRankSum = 0;
  for (let k = 0; k < labels.length; k++) {
    if (labels[k] === 1) posRankSum += ranks[k];
  }
  return (posRankSum - (nPos * (nPos + 1)) / 2) / (nPos * nNeg);
}
