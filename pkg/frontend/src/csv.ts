/** Parser for the series CSV artifact. */

export interface SeriesPoint {
  wIndex: number;
  wValue: string;
  meanFemale: number;
  meanMale: number;
  nProbes: number;
}

export const SERIES_HEADER = "w_index,w_value,mean_female,mean_male,n_probes";

/** Split one CSV line, honoring double-quoted fields with "" escapes. */
function splitLine(line: string): string[] {
  const fields: string[] = [];
  let current = "";
  let quoted = false;
  for (let i = 0; i < line.length; i++) {
    const ch = line[i];
    if (quoted) {
      if (ch === '"') {
        if (line[i + 1] === '"') {
          current += '"';
          i++;
        } else {
          quoted = false;
        }
      } else {
        current += ch;
      }
    } else if (ch === '"') {
      quoted = true;
    } else if (ch === ",") {
      fields.push(current);
      current = "";
    } else {
      current += ch;
    }
  }
  fields.push(current);
  return fields;
}

function toNumber(raw: string, what: string): number {
  const value = Number(raw);
  if (raw.trim() === "" || Number.isNaN(value)) {
    throw new Error(`series CSV has a non-numeric ${what}: ${JSON.stringify(raw)}`);
  }
  return value;
}

export function parseSeriesCsv(text: string): SeriesPoint[] {
  const lines = text.split(/\r?\n/).filter((line) => line.length > 0);
  if (lines.length === 0 || lines[0] !== SERIES_HEADER) {
    throw new Error("series CSV is missing the expected header");
  }
  return lines.slice(1).map((line) => {
    const fields = splitLine(line);
    if (fields.length !== 5) {
      throw new Error(`series CSV row has ${fields.length} fields, expected 5`);
    }
    return {
      wIndex: toNumber(fields[0], "w_index"),
      wValue: fields[1],
      meanFemale: toNumber(fields[2], "mean_female"),
      meanMale: toNumber(fields[3], "mean_male"),
      nProbes: toNumber(fields[4], "n_probes"),
    };
  });
}
