/** Least-squares fits used for figure annotations. */

export interface ExponentialFit {
  amplitude: number;
  rate: number;
  r2: number;
}

/** Fit y = A exp(-rate t) by linear regression on log y (positive y only). */
export function fitExponential(t: number[], y: number[]): ExponentialFit {
  const pts = t
    .map((ti, k) => [ti, y[k]] as const)
    .filter(([, yi]) => yi > 0);
  if (pts.length < 2) {
    throw new Error("exponential fit needs at least two positive points");
  }
  const xs = pts.map(([ti]) => ti);
  const ys = pts.map(([, yi]) => Math.log(yi));
  const { slope, intercept, r2 } = linearFit(xs, ys);
  return { amplitude: Math.exp(intercept), rate: -slope, r2 };
}

export interface LinearFit {
  slope: number;
  intercept: number;
  r2: number;
}

export function linearFit(x: number[], y: number[]): LinearFit {
  const n = x.length;
  const mx = x.reduce((a, b) => a + b, 0) / n;
  const my = y.reduce((a, b) => a + b, 0) / n;
  let sxx = 0;
  let sxy = 0;
  let syy = 0;
  for (let k = 0; k < n; k++) {
    sxx += (x[k] - mx) ** 2;
    sxy += (x[k] - mx) * (y[k] - my);
    syy += (y[k] - my) ** 2;
  }
  const slope = sxy / sxx;
  const intercept = my - slope * mx;
  const r2 = syy === 0 ? 1 : (sxy * sxy) / (sxx * syy);
  return { slope, intercept, r2 };
}

/** Slope of the best line through the origin, y ~ slope * x. */
export function originSlope(x: number[], y: number[]): number {
  let num = 0;
  let den = 0;
  for (let k = 0; k < x.length; k++) {
    num += x[k] * y[k];
    den += x[k] * x[k];
  }
  return num / den;
}
