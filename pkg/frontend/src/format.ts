/** Display formatting for server-reported quantities. */

/** BQI readout, always three decimals: 0.25 -> "BQI 0.250". */
export function formatBqi(bqi: number): string {
  return `BQI ${bqi.toFixed(3)}`;
}
