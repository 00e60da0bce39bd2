/** Error types for the viz pipeline. */

/** Input tables do not match the documented CSV contract. */
export class SchemaMismatch extends Error {
  constructor(message: string) {
    super(message);
    this.name = "SchemaMismatch";
  }
}

/** A field file is missing, truncated, or not legacy ASCII VTK. */
export class UnreadableFile extends Error {
  constructor(message: string) {
    super(message);
    this.name = "UnreadableFile";
  }
}
