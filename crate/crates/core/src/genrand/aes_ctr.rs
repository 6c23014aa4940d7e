//! AES-128 in counter mode as a keystream of 128-bit blocks.

use aes::cipher::generic_array::GenericArray;
use aes::cipher::{BlockEncrypt, KeyInit};
use aes::Aes128;

#[derive(Clone)]
pub struct Aes128Ctr {
    cipher: Aes128,
    counter: u128,
}

impl Aes128Ctr {
    pub fn new(key: [u8; 16], counter0: [u8; 16]) -> Self {
        Self {
            cipher: Aes128::new(&GenericArray::from(key)),
            counter: u128::from_be_bytes(counter0),
        }
    }

    /// Encrypts the current counter, then increments it (big-endian, wrapping).
    pub fn next_block(&mut self) -> [u8; 16] {
        let mut block = GenericArray::from(self.counter.to_be_bytes());
        self.cipher.encrypt_block(&mut block);
        self.counter = self.counter.wrapping_add(1);
        block.into()
    }

    pub fn skip_blocks(&mut self, count: u128) {
        self.counter = self.counter.wrapping_add(count);
    }
}
