/**
 * Character vocabulary for serialized transcripts.
 *
 * Three specials (BOS to start decoding, EOS for end of sequence, SC for
 * speaker change) followed by one id per character. The textual markers
 * match the transcription toolkit's serialized form, so encoded/decoded
 * strings round-trip through its encoder and decoder.
 */

export const SC_TOKEN = "⟨sc⟩";
export const EOS_TOKEN = "⟨eos⟩";

export const BOS_ID = 0;
export const EOS_ID = 1;
export const SC_ID = 2;

export const DEFAULT_CHARS = " abcdefghijklmnopqrstuvwxyz";

export class Vocab {
  readonly bos = BOS_ID;
  readonly eos = EOS_ID;
  readonly sc = SC_ID;
  private readonly charToId = new Map<string, number>();
  private readonly idToChar: string[] = [];

  constructor(chars: string = DEFAULT_CHARS) {
    for (const ch of chars) {
      if (this.charToId.has(ch)) {
        throw new Error(`duplicate character ${JSON.stringify(ch)} in vocabulary`);
      }
      this.charToId.set(ch, 3 + this.idToChar.length);
      this.idToChar.push(ch);
    }
  }

  get size(): number {
    return 3 + this.idToChar.length;
  }

  /**
   * Encode a serialized transcript into ids, always terminated with EOS.
   * Words become character runs separated by the space id; the speaker
   * change and end markers become their special ids.
   */
  encodeSotText(text: string): Int32Array {
    const tokens = text.trim().split(/\s+/).filter((t) => t.length > 0);
    const spaceId = this.charToId.get(" ");
    const ids: number[] = [];
    let prevWasWord = false;
    for (const token of tokens) {
      if (token === EOS_TOKEN) {
        break;
      }
      if (token === SC_TOKEN) {
        ids.push(this.sc);
        prevWasWord = false;
        continue;
      }
      if (prevWasWord) {
        if (spaceId === undefined) {
          throw new Error("vocabulary has no space character for word boundaries");
        }
        ids.push(spaceId);
      }
      for (const ch of token) {
        const id = this.charToId.get(ch);
        if (id === undefined) {
          throw new Error(`character ${JSON.stringify(ch)} not in vocabulary`);
        }
        ids.push(id);
      }
      prevWasWord = true;
    }
    ids.push(this.eos);
    return Int32Array.from(ids);
  }

  /** Decode ids back to a serialized transcript string. */
  decodeIds(ids: ArrayLike<number>): string {
    let raw = "";
    for (let i = 0; i < ids.length; i++) {
      const id = ids[i];
      if (id === this.bos) continue;
      if (id === this.eos) {
        raw += ` ${EOS_TOKEN}`;
        break;
      }
      if (id === this.sc) {
        raw += ` ${SC_TOKEN} `;
        continue;
      }
      const ch = this.idToChar[id - 3];
      if (ch === undefined) {
        throw new Error(`id ${id} outside vocabulary of ${this.size}`);
      }
      raw += ch;
    }
    return raw.trim().split(/\s+/).join(" ");
  }
}
