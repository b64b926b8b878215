/**
 * Polynomial learning-rate decay: lr(e) = lr0 * (1 - e/E)^p.
 * Exactly zero at e = E.
 */
export function polyLr(epoch: number, totalEpochs: number,
                       initialLr = 0.01, exponent = 0.9): number {
  if (totalEpochs <= 0) throw new Error('totalEpochs must be positive');
  if (epoch < 0 || epoch > totalEpochs) {
    throw new Error(`epoch ${epoch} outside [0, ${totalEpochs}]`);
  }
  if (epoch === totalEpochs) return 0;
  return initialLr * Math.pow(1 - epoch / totalEpochs, exponent);
}
