/** Renderer failure modes, kept distinct so the CLI can exit precisely. */

export class SpecError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "SpecError";
  }
}

export class CsvError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "CsvError";
  }
}

export class MissingColumnError extends CsvError {
  readonly column: string;

  constructor(column: string, path: string, available: string[]) {
    super(
      `column "${column}" not found in ${path}; ` +
        `available columns: ${available.join(", ")}`,
    );
    this.name = "MissingColumnError";
    this.column = column;
  }
}
