import { describe, expect, it } from "vitest";

import { MemoryStorage, ReviewSession } from "../src/session.js";
import { pendingPair } from "./fixtures.js";

function threePairs() {
  return [
    pendingPair({ case_id: "c1", trial_id: "t1" }),
    pendingPair({ case_id: "c1", trial_id: "t2" }),
    pendingPair({ case_id: "c2", trial_id: "t1" }),
  ];
}

describe("review session", () => {
  it("steps through the queue within bounds", () => {
    const session = new ReviewSession("alice", new MemoryStorage());
    session.load(threePairs());
    expect(session.current?.trial_id).toBe("t1");
    session.next();
    expect(session.current?.trial_id).toBe("t2");
    session.previous();
    session.previous();
    expect(session.position).toBe(0);
  });

  it("keeps drafts across navigation", () => {
    const session = new ReviewSession("alice", new MemoryStorage());
    const pairs = threePairs();
    session.load(pairs);
    const first = pairs[0]!;
    session.saveDraft(first, { ...session.draft(first), eligible: true, note: "wip" });
    session.next();
    session.previous();
    const restored = session.draft(first);
    expect(restored.eligible).toBe(true);
    expect(restored.note).toBe("wip");
  });

  it("keeps drafts across a reload with the same storage", () => {
    const storage = new MemoryStorage();
    const pairs = threePairs();
    const before = new ReviewSession("alice", storage);
    before.load(pairs);
    before.saveDraft(pairs[1]!, { ...before.draft(pairs[1]!), eligible: false, note: "later" });

    const after = new ReviewSession("alice", storage);
    after.load(pairs);
    expect(after.draft(pairs[1]!).note).toBe("later");
  });

  it("scopes drafts per rater", () => {
    const storage = new MemoryStorage();
    const pairs = threePairs();
    const alice = new ReviewSession("alice", storage);
    alice.load(pairs);
    alice.saveDraft(pairs[0]!, { ...alice.draft(pairs[0]!), note: "alice only" });
    const bob = new ReviewSession("bob", storage);
    bob.load(pairs);
    expect(bob.draft(pairs[0]!).note).toBe("");
  });

  it("removes submitted items and their drafts", () => {
    const storage = new MemoryStorage();
    const session = new ReviewSession("alice", storage);
    const pairs = threePairs();
    session.load(pairs);
    session.saveDraft(pairs[0]!, { ...session.draft(pairs[0]!), eligible: true });
    session.markSubmitted(pairs[0]!);
    expect(session.queue).toHaveLength(2);
    expect(session.current?.trial_id).toBe("t2");
    expect(session.draft(pairs[0]!).eligible).toBeNull();
  });

  it("handles submitting the last item", () => {
    const session = new ReviewSession("alice", new MemoryStorage());
    const pairs = threePairs();
    session.load(pairs);
    session.position = 2;
    session.markSubmitted(pairs[2]!);
    expect(session.position).toBe(1);
    session.markSubmitted(pairs[1]!);
    session.markSubmitted(pairs[0]!);
    expect(session.current).toBeNull();
  });
});
