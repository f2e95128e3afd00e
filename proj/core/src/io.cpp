namespace symph {}
