/** Raised for problems a caller can fix: bad flags, bad files, bad shapes. */
export class ExportError extends Error {}
