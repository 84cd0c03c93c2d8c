class Messenger:
    def __init__(self):
        self.subscribers = {}

    def subscribe(self, event_type, callable):
        self.subscribers.setdefault(event_type, []).append(callable)

    def unsubscribe(self, event_type, callable):
        receivers = self.subscribers.get(event_type, [])
        if callable in receivers:
            receivers.remove(callable)

    def publish(self, event):
        receivers = self.subscribers.get(event.etype, [])
        for callable in list(receivers):
            callable(event.data)


class Event:
    etype = "generic"

    def __init__(self, data):
        self.data = data


class MembershipQueryEvent(Event):
    etype = "membership_query"


class EquivalenceQueryEvent(Event):
    etype = "equivalence_query"


class BasisExtendedEvent(Event):
    etype = "basis_extended"


class ColumnAddedEvent(Event):
    etype = "column_added"


class RoundCompleteEvent(Event):
    etype = "round_complete"


all_event_types = [cls.etype for cls in (MembershipQueryEvent, EquivalenceQueryEvent, BasisExtendedEvent,
                                         ColumnAddedEvent, RoundCompleteEvent)]


messenger = Messenger()
